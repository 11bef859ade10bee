"""Unit conversion constants.

Everything inside the package is SI: pressures in Pa, permeabilities in m^2,
viscosities in Pa*s, rates in m^3/s, times in s, lengths in m.  Field units
(bar, millidarcy, centipoise, day) appear only at configuration and CLI
boundaries; multiply by these constants to convert inward, divide to convert
back out.
"""

BAR = 1.0e5                 # Pa per bar
MILLIDARCY = 9.869233e-16   # m^2 per mD
CENTIPOISE = 1.0e-3         # Pa*s per cP
DAY = 86400.0               # s per day
