import matplotlib.pyplot as plt

fig, ax = plt.subplots(figsize=(4, 3))
ax.fill([0, 2, 1], [0, 0, 2], color="tab:pink")  #1
ax.fill([3, 5, 5, 3], [0, 0, 1.5, 1.5], color="tab:gray")  #2
ax.set_xlim(-0.5, 5.5)
ax.set_ylim(-0.5, 2.5)
