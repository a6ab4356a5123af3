import matplotlib.pyplot as plt

fig, ax = plt.subplots(figsize=(4, 3))
groups = [[10, 12, 13, 15, 18, 20], [8, 9, 11, 12, 14, 15], [14, 16, 17, 19, 21, 22]]
ax.boxplot(groups, widths=0.6)  #1
