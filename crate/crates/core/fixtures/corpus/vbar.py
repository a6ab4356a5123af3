import matplotlib.pyplot as plt

fig, ax = plt.subplots(figsize=(4, 3))
labels = ["A", "B", "C", "D", "E"]
sales = [12, 30, 22, 7, 18]
ax.bar(labels, sales, color="tab:blue")  #1
ax.set_title("Quarterly sales")
