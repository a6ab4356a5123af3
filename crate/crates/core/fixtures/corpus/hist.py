import matplotlib.pyplot as plt
import numpy as np

fig, ax = plt.subplots(figsize=(4, 3))
data = np.random.normal(50, 10, size=300)
ax.hist(data, bins=8, color="tab:orange", edgecolor="black")  #1
ax.set_xlabel("value")
