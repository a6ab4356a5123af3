import matplotlib.pyplot as plt

fig, ax = plt.subplots(figsize=(4, 3))
years = [2019, 2020, 2021, 2022, 2023]
coal = [5, 4, 4, 3, 2]
gas = [3, 3, 4, 4, 4]
solar = [1, 2, 3, 4, 6]
ax.stackplot(years, coal, gas, solar, labels=["coal", "gas", "solar"])  #1
ax.legend(loc="upper left")
