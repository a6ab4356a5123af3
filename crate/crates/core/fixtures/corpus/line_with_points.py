import matplotlib.pyplot as plt

fig, ax = plt.subplots(figsize=(4, 3))
x = [0, 1, 2, 3, 4]
series = {"alpha": [1, 3, 2, 4, 3], "beta": [4, 2, 3, 1, 2], "gamma": [2, 2.5, 5, 5.5, 6]}
for name, ys in series.items():
    ax.plot(x, ys, marker="s", linewidth=1.5, label=name)  #1
ax.legend(loc="upper left")
