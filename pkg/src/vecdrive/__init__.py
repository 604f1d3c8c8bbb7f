"""Induction motor FOC/DTC drive simulation and switching-frequency comparison."""
