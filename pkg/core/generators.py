"""
Seeded random instances for property sweeps.
"""
import numpy as np

from .domain import OUTSIDE_OPTION, ProblemInstance


def student_ids(count):
    return [f"i{k}" for k in range(1, count + 1)]


def college_ids(count):
    return [f"c{k}" for k in range(1, count + 1)]


def ranked_instance(capacities, preference_orders):
    """
    Instance whose students i1..in have scores n..1 and the given orders.

    `preference_orders` is a sequence of college-index sequences, one per
    student in priority order.
    """
    colleges = college_ids(len(capacities))
    students = student_ids(len(preference_orders))
    count = len(students)
    return ProblemInstance(
        students=students,
        scores={s: count - k for k, s in enumerate(students)},
        colleges=colleges,
        capacities=dict(zip(colleges, capacities)),
        preferences={
            s: tuple(colleges[c] for c in order)
            for s, order in zip(students, preference_orders)
        },
    )


def random_instance(rng, max_students=6, max_colleges=6, max_capacity=3, truncate_prob=0.0):
    """
    Draw an instance with 1..max_students students and 1..max_colleges colleges.

    With probability `truncate_prob` a student's list is cut at a random point
    by the outside-option sentinel.
    """
    num_students = int(rng.integers(1, max_students + 1))
    num_colleges = int(rng.integers(1, max_colleges + 1))
    colleges = college_ids(num_colleges)
    students = student_ids(num_students)

    scores = rng.choice(np.arange(1, 10 * num_students + 1), size=num_students, replace=False)
    scores = sorted((int(s) for s in scores), reverse=True)

    preferences = {}
    for student in students:
        order = [colleges[k] for k in rng.permutation(num_colleges)]
        if truncate_prob and rng.random() < truncate_prob:
            cut = int(rng.integers(0, num_colleges + 1))
            order = order[:cut] + [OUTSIDE_OPTION] + order[cut:]
        preferences[student] = order

    return ProblemInstance(
        students=students,
        scores=dict(zip(students, scores)),
        colleges=colleges,
        capacities={c: int(rng.integers(1, max_capacity + 1)) for c in colleges},
        preferences=preferences,
    )
