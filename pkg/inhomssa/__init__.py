"""
inhomssa - Exact simulation and coupled estimators for time-inhomogeneous reaction networks
"""
