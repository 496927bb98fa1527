"""level_flood -- Level-Based Flooding simulator for wireless sensor networks.

Simulates query dissemination from a single sink over random disk-graph
deployments and compares Level-Based Flooding against basic flooding.

Notes
-----
The package follows a layered architecture with:
- domain holding topologies, packet types and metric aggregates,
- infrastructure holding the wire codec, random streams and event engine,
- application holding the two protocols and experiment services,
- presentation holding the command line and CSV reports,
- config holding settings and structured logging.

Examples
--------
The main entry point is ``main.main``, installed as the ``level-flood``
console script.
"""
