"""
🔺 Unfitted Poisson Solvers
===========================
P1 fictitious-domain schemes that never integrate over cut cells
(Dirichlet, Neumann, Robin), the CutFEM baselines, and a study harness
for convergence and robustness experiments on the criss-cross mesh.
"""

__version__ = "0.1.0"
