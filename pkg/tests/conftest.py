import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from photon.executor import load_database
from photon.schema import load_picklists, load_schema

CONCERT_DOC = {
    "db_id": "concert_singer",
    "tables": [
        {"name": "singer", "columns": [
            {"name": "singer_id", "type": "number", "primary": True},
            {"name": "name", "type": "text"},
            {"name": "age", "type": "number"},
            {"name": "country", "type": "text"},
        ]},
        {"name": "concert", "columns": [
            {"name": "concert_id", "type": "number", "primary": True},
            {"name": "venue", "type": "text"},
            {"name": "year", "type": "number"},
            {"name": "singer_ref", "type": "number"},
        ]},
    ],
    "foreign_keys": [["concert.singer_ref", "singer.singer_id"]],
}

SINGER_CSV = ("singer_id,name,age,country\n"
              "1,Joe,52,France\n"
              "2,Ana,25,Netherlands\n"
              "3,Li,41,France\n"
              "4,Rosa,30,Spain\n")
CONCERT_CSV = ("concert_id,venue,year,singer_ref\n"
               "1,Arena,2014,1\n"
               "2,Hall,2015,2\n"
               "3,Park,2015,1\n")

WORLD_DOC = {
    "db_id": "world",
    "tables": [
        {"name": "country", "columns": [
            {"name": "country_id", "type": "number", "primary": True},
            {"name": "region", "type": "text"},
            {"name": "population", "type": "number"},
        ]},
        {"name": "economy", "columns": [
            {"name": "economy_id", "type": "number", "primary": True},
            {"name": "gdp", "type": "number"},
            {"name": "nation", "type": "text"},
        ]},
    ],
    "foreign_keys": [],
}

COUNTRY_CSV = ("country_id,region,population\n"
               "1,Carribean,400\n"
               "2,Carribean,250\n"
               "3,Porto Rico,300\n")
ECONOMY_CSV = "economy_id,gdp,nation\n1,100,Aruba\n2,200,Chile\n"


@pytest.fixture(scope="session")
def concert_schema():
    return load_schema(json.dumps(CONCERT_DOC))


@pytest.fixture(scope="session")
def concert_db(concert_schema):
    return load_database(concert_schema,
                         {"singer": SINGER_CSV, "concert": CONCERT_CSV})


@pytest.fixture(scope="session")
def world_schema_with_picklists():
    schema = load_schema(json.dumps(WORLD_DOC))
    db = load_database(schema, {"country": COUNTRY_CSV, "economy": ECONOMY_CSV})
    return load_picklists(schema, {t.table_id: db.tables[t.table_id]
                                   for t in schema.tables})
