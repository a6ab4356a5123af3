import matplotlib.pyplot as plt

fig, ax = plt.subplots(figsize=(4, 4))
shares = [35, 25, 20, 15, 5]
ax.pie(shares, labels=["rent", "food", "travel", "fun", "misc"], startangle=90)  #1
ax.set_title("Budget")
