"""
Utility modules: seeded random draws, JSON codecs and environment settings.

Nothing is re-exported here; utils.serialization depends on core, which in
turn imports utils.random_elements.
"""
