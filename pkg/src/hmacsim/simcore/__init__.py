"""Event engine, radio channel, topology and energy accounting."""
