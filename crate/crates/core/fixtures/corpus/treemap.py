import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

fig, ax = plt.subplots(figsize=(4, 3))
tiles = [(0, 0, 6, 4, "#88ccee"), (6, 0, 4, 4, "#cc6677"), (0, 4, 4, 2, "#ddcc77"), (4, 4, 6, 2, "#117733")]
for x, y, w, h, color in tiles:
    ax.add_patch(Rectangle((x, y), w, h, facecolor=color, edgecolor="white"))  #1
ax.set_xlim(0, 10)
ax.set_ylim(0, 6)
ax.axis("off")
