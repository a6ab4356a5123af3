import matplotlib.pyplot as plt
import numpy as np

fig = plt.figure(figsize=(4, 4))
ax = fig.add_subplot(projection="polar")
theta = np.linspace(0, 2 * np.pi, 6, endpoint=False)
ax.plot(theta, [3, 4, 2, 5, 3, 4], "-o", color="tab:purple")  #1
ax.plot(theta, [1, 2, 1.5, 2.5, 1, 2], "-^", color="tab:olive")  #2
ax.set_rmax(6)
