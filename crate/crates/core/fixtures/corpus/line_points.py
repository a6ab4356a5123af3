import matplotlib.pyplot as plt

fig, ax = plt.subplots(figsize=(4, 3))
months = [1, 2, 3, 4, 5]
ax.plot(months, [3, 5, 4, 7, 6], "-o", color="tab:red")  #1
ax.set_ylim(0, 8)
