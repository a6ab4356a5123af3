import matplotlib.pyplot as plt

fig, ax = plt.subplots(figsize=(4, 3))
groups = [[1, 2, 3, 4, 5, 6, 7], [3, 4, 5, 6, 7, 8, 9], [2, 2.5, 3, 3.5, 4, 6, 8]]
ax.boxplot(groups, whis=1.5, showfliers=False)  #1
ax.set_ylim(0, 10)
