"""Learned random access for downlink LEO satellite networks.

Modules, bottom up: ``orbit_channel`` (ring geometry, link rates),
``mac_env`` (slotted access environment), ``neural`` (numpy dense nets,
Adam, checkpoints), ``protocols`` (eRACH, De2RACH, Ce2RACH wiring),
``training`` (centralized-critic actor-critic), ``metrics`` and ``cli``.
"""

__version__ = "0.1.0"
