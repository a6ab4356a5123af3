import matplotlib.pyplot as plt

fig, ax = plt.subplots(figsize=(4, 3))
xs = [1, 2, 3, 4, 5, 6]
ys = [2.0, 4.5, 3.1, 6.2, 5.0, 1.5]
ax.scatter(xs, ys, s=40, c="tab:green")  #1
ax.set_xlim(0, 7)
ax.set_ylim(0, 7)
