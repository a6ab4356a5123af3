import matplotlib.pyplot as plt
import numpy as np

fig = plt.figure(figsize=(4, 4))
ax = fig.add_subplot(projection="polar")
theta = np.linspace(0, 2 * np.pi, 8, endpoint=False)
radius = [2, 3, 4, 3, 2, 3, 4, 3]
ax.plot(theta, radius, "--D", color="tab:cyan", markersize=7)  #1
ax.set_rmax(5)
