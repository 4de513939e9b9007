"""Isolated execution worker for generated optimization programs.

Speaks a one-request/one-response JSON-line protocol over stdio: the
supervisor process (``worker``) reads a request, runs the submitted code in a
freshly spawned, resource-limited child process (``runtime``), and writes a
single JSON response line. ``gurobi_compat`` provides a scipy-backed stand-in
for the ``gurobipy`` API so solver programs run without a commercial license.
"""

__version__ = "0.1.0"
