import matplotlib.pyplot as plt
import numpy as np

fig = plt.figure(figsize=(4, 4))
ax = fig.add_subplot(projection="polar")
angles = np.linspace(0, 2 * np.pi, 6, endpoint=False)
ax.bar(angles, [4, 2, 5, 3, 1, 4], width=0.8, color="tab:blue", alpha=0.8)  #1
