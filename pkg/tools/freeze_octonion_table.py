"""Regenerate src/kfilter/data/octonion_table.csv.

Picks the first table returned by ``compatible_tables``: alternative, both
G2 sample generators are automorphisms, closest to the preferred products.
"""

from pathlib import Path

from kfilter.octonion import compatible_tables, table_from_triples, write_table_csv

OUT = Path(__file__).resolve().parents[1] / "src" / "kfilter" / "data" / "octonion_table.csv"

if __name__ == "__main__":
    tables = compatible_tables()
    print(f"{len(tables)} compatible tables; using {tables[0]}")
    OUT.write_text(write_table_csv(table_from_triples(tables[0])))
    print(f"wrote {OUT}")
