"""Moment calculus for Haar unitaries and spectra of the operators built from them.

The package is organized bottom-up:

- :mod:`haarmoments.symcore`: permutations, pair partitions, set partitions.
- :mod:`haarmoments.weingarten`: exact unitary and orthogonal Weingarten
  functions, monomial series expansions, and Haar moments.
- :mod:`haarmoments.centered_wg`: the generalized Weingarten function for
  products of centered blocks, with its restricted expansion and estimates.
- :mod:`haarmoments.wick`: complex Gaussian Wick calculus and the
  Gaussian-domination checks for centered Haar moments.
- :mod:`haarmoments.freegroup`: free-group words, matrix pencils, tree and
  ball operators, and resolvent recursions on the infinite tree.
- :mod:`haarmoments.nonbacktracking`: color non-backtracking operators and
  the companion-pencil spectral mapping.
- :mod:`haarmoments.haarmodel`: sampled tensor-product models, the
  tensor-symmetry projector, and the strong-convergence experiments.
- :mod:`haarmoments.linearization`: reduction of polynomial norms to pencil
  norms via self-adjoint embedding and square-root pencils.
- :mod:`haarmoments.cli`: the ``haarmoments`` command line.
"""

__version__ = "0.1.0"
