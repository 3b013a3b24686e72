"""Shared hypothesis strategies."""
import cmath
import math

from hypothesis import strategies as st


@st.composite
def q_values(draw, lo=1.3, hi=4.0):
    mod = draw(st.floats(lo, hi))
    arg = draw(st.floats(-math.pi, math.pi))
    return cmath.rect(mod, arg)


@st.composite
def annulus_points(draw, lo=0.2, hi=4.0):
    r = math.exp(draw(st.floats(math.log(lo), math.log(hi))))
    t = draw(st.floats(-math.pi, math.pi))
    return cmath.rect(r, t)
