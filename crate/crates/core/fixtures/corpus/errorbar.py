import matplotlib.pyplot as plt

fig, ax = plt.subplots(figsize=(4, 3))
x = [1, 2, 3, 4]
y = [2.0, 3.5, 3.0, 4.5]
ax.errorbar(x, y, yerr=[0.5, 0.8, 0.4, 0.6], fmt="none", capsize=4, ecolor="black")  #1
ax.set_xlim(0, 5)
ax.set_ylim(0, 6)
