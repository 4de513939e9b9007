import gurobipy as gp
from gurobipy import GRB


def solve_transportation():
    supply = [120, 90, 60]
    demand = [70, 80, 50, 70]
    cost = [
        [4.0, 6.0, 9.0, 5.0],
        [7.0, 3.0, 8.0, 6.0],
        [5.0, 7.0, 4.0, 8.0],
    ]

    model = gp.Model("transportation")
    ship = model.addVars(3, 4, lb=0.0, name="ship")

    model.setObjective(ship.prod(cost), GRB.MINIMIZE)

    for i in range(3):
        model.addConstr(ship.sum(i, "*") <= supply[i], name=f"supply_{i}")
    for j in range(4):
        model.addConstr(ship.sum("*", j) >= demand[j], name=f"demand_{j}")

    model.optimize()

    if model.status == GRB.OPTIMAL:
        print(f"Minimum shipping cost: {model.objVal:.2f}")
        return model.objVal
    return None


if __name__ == "__main__":
    solve_transportation()
