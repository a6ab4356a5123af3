import matplotlib.pyplot as plt

# 400x300 px canvas at 100 dpi; axes occupy [50, 350] x [30, 270] px from the bottom-left
fig = plt.figure(figsize=(4, 3))
ax = fig.add_axes([0.125, 0.1, 0.75, 0.8])
ax.bar([5], [6], width=2, bottom=1, color="tab:blue")  #1
ax.set_xlim(0, 10)
ax.set_ylim(0, 10)
