"""
Where does the array gain peak?
===============================

A beam steered to spatial direction ``theta_bar`` collects full gain at
subcarrier ``m`` only when ``theta_bar = eta_m theta``. We scan the closed
form gain on a fine grid and compare the argmax with that prediction.
"""

import numpy as np

from thzdoa import ArrayConfig, array_gain

arr = ArrayConfig(128, 8, 300e9, 30e9, 11)
theta = np.sin(np.deg2rad(60.0))
tb = np.linspace(-1, 1, 20001)

for m in (1, 6, 11):
    g = array_gain(arr, theta, tb, m)
    best = tb[np.argmax(g)]
    print(f"m={m:2d}  argmax {best:.5f}  eta_m*theta {arr.eta[m - 1] * theta:.5f}  "
          f"gain there {array_gain(arr, theta, arr.eta[m - 1] * theta, m):.12f}")

# steering at the nominal direction loses most of the energy at the band edge
print(f"\ngain at theta_bar = theta, m=1: {array_gain(arr, theta, theta, 1):.4f}")
