import matplotlib.pyplot as plt
import numpy as np

fig, ax = plt.subplots(figsize=(4, 3))
x = np.linspace(-3, 3, 61)
for shift, color in [(-1.0, "tab:blue"), (1.0, "tab:orange")]:
    density = np.exp(-0.5 * (x - shift) ** 2) / np.sqrt(2 * np.pi)
    ax.fill_between(x, density, alpha=0.5, color=color)  #1
ax.set_ylim(0, 0.5)
