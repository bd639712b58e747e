from enum import Enum


class Metric(str, Enum):
    frobenius = "frobenius"
    square_root = "sqrt"
    procrustes = "procrustes"
