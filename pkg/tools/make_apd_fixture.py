"""Regenerate src/acqkd/data/apd_sweeps_synthetic.csv.

Synthetic data: each device peaks exactly at its published (K_max, T_max);
other points fall off smoothly in temperature and bias. Not measured data.
"""

import csv
import math
import sys

# id, breakdown bias (None = not recorded), K_max, T_max, temperatures tested
DEVICES = [
    ("1", None, 472, 108, (100, 108, 118, 130)),
    ("2", 53.8, 24520, 118, (108, 118, 130, 150, 170, 190)),
    ("3", 52.8, 22000, 118, (108, 118, 130, 150)),
    ("4", 54.7, 22000, 118, (108, 118, 130, 150)),
    ("5", 47.4, 210, 108, (100, 108, 118, 130)),
    ("6", 66.2, 1038, 130, (118, 130, 150, 170)),
    ("7", 64.4, 556, 130, (118, 130, 150, 170)),
    ("8", 34.3, 2192, 77, (77,)),
    ("9", 44.0, 43, 240, (200, 220, 240)),
]
OFFSETS = (-1.5, -1.0, -0.5, 0.0, 0.5)


def rows():
    for dev, vb, kmax, tmax, temps in DEVICES:
        for t in temps:
            ft = math.exp(-abs(t - tmax) / 25.0)
            offs = (None,) if vb is None else OFFSETS
            for off in offs:
                fb = 1.0 if off is None else math.exp(-(off ** 2) / 0.8)
                k = kmax * ft * fb
                qe = 20.0 if off is None else 20.0 + 4.0 * off
                dark = 1000.0 * qe * qe / k
                bias = "NA" if vb is None else repr(round(vb + off - 0.0, 3))
                yield dev, t, bias, qe, dark


def main(out):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("device_id", "temperature_K", "dc_bias_V", "qe_percent", "dark_per_s"))
    for dev, t, bias, qe, dark in rows():
        w.writerow((dev, t, bias, repr(qe), repr(dark)))


if __name__ == "__main__":
    main(sys.stdout)
