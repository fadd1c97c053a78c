from fractions import Fraction

import pytest

from asreach import FiniteDiscrete, PointMass, Smms, UniformBox


def car_modes():
    hw = (Fraction(15, 2), Fraction(15, 2))
    return Smms((UniformBox((0, 1), hw), UniformBox((0, -1), hw),
                 UniformBox((1, 0), hw), UniformBox((-1, 0), hw)))


def axis_point_masses(n=2):
    modes = []
    for j in range(n):
        for s in (1, -1):
            v = [0] * n
            v[j] = s
            modes.append(PointMass(tuple(v)))
    return Smms(tuple(modes))


def fair_coin():
    return Smms((FiniteDiscrete((((1,), Fraction(1, 2)), ((-1,), Fraction(1, 2)))),))


@pytest.fixture
def car():
    return car_modes()


@pytest.fixture
def cross():
    return axis_point_masses(2)
