"""Natural language interface to relational databases.

Maps user questions to SQL, statically validates and executes the SQL,
detects untranslatable questions via confusion-span extraction, and proposes
schema-aware corrections in a dialogue loop.
"""

__version__ = "0.1.0"
