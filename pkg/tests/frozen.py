"""Reference values frozen from the oracles in ``oracles.py``.

Each constant notes the oracle call that produced it.
"""
import math

# persistence fixture a=0.8, p=1, m=0.3, k=1, kappa=0, mu=1
PERSIST = dict(a=0.8, p=1.0, m=0.3, k=1.0, kappa=0.0, mu=1.0)
# GAS fixture a=0.45, p=1, m=0.1, k=1, kappa=0, mu=1
GAS = dict(a=0.45, p=1.0, m=0.1, k=1.0, kappa=0.0, mu=1.0)
# open case kappa=1, k=0
OPEN = dict(a=0.8, p=1.0, m=0.3, k=0.0, kappa=1.0, mu=1.0)

Q0_PERSIST = 0.3  # q_formula(0.8, 1, 0.3, 1, 0, 0)
Q0_GAS = -0.2  # q_formula(0.45, 1, 0.1, 1, 0, 0)
GAMMA0_PERSIST = 0.4  # gamma_formula(0.8, 1, 1, 0, 0)
EPS_GAMMA_PERSIST = 0.4  # grid_min(gamma_formula(0.8, 1, 1, 0, .), 0, 100)
Z_BAR = 3.0 / 13.0  # q_zero_closed_form(0.8, 1, 0.3, 1); bisect_oracle agrees to 2e-16
GAMMA_ZBAR = 0.7  # gamma_formula(0.8, 1, 1, 0, 3/13)
W_BAR = Z_BAR / GAMMA_ZBAR  # mu * v / gamma(v) for g == 1, d == 0
DELTA_PERSIST = 0.15  # min(m, |q(inf)|) / 2 with q(inf) = -p - m
Z_STAR_PERSIST = 1.6 / 1.15 - 1.0  # bisect_oracle(q + 0.15); 0.391304347826087
EXPDECAY_G0 = 1.5  # 0.5 + exp(0) * 1
HILL_EPS_G = 0.4  # 2 (1 - 2 * 0.4) * 1

# HillG a_g=0.2, p_g=1, k_g=1 on x2=1, b=0.5: eps_g=1.2, K_g=2, h=0.25, x1=0.85;
# constant psi=0.5: euler_maturation(...) = 0.08653846153844941
TAU_HILL_CONST = 0.08653846153844941

T_D_Z2 = math.log(3.0)  # ln(z* + 1) / mu with z* = 2, mu = 1
