"""Exact small-scale simulator of quantum digital signatures.

Modules: ``statevec`` (labeled-register pure states), ``owf`` (quantum
one-way function families), ``eqtest`` (swap, verification and symmetry
tests), ``protocol`` (keys, distribution, signing, verdicts), ``adversary``
(forging and repudiation engines), ``analysis`` (bounds and the low-weight
tail experiment) and ``cli``.
"""

__version__ = "0.1.0"
