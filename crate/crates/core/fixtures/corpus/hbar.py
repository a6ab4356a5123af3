import matplotlib.pyplot as plt

fig, ax = plt.subplots(figsize=(4, 3))
teams = ["North", "South", "East", "West"]
scores = [3.5, 8.0, 5.2, 6.7]
ax.barh(teams, scores, color=["#4477aa", "#ee6677", "#228833", "#ccbb44"])  #1
ax.set_xlabel("score")
