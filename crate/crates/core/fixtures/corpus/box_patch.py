import matplotlib.pyplot as plt

fig, ax = plt.subplots(figsize=(4, 3))
groups = [[2, 3, 3.5, 4, 5, 6, 7], [4, 5, 5.5, 6, 7, 8, 9], [1, 1.5, 2, 3, 3.2, 4, 4.5], [5, 6, 6.5, 7, 7.5, 8, 10]]
ax.boxplot(groups, patch_artist=True)  #1
ax.set_xticks([1, 2, 3, 4], ["w", "x", "y", "z"])
