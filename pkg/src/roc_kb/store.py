"""In-memory triple store with three indexes and rule-based materialization."""

from __future__ import annotations

from typing import Iterable, Iterator, NamedTuple, Optional

from ._alloc import collector_paused
from .ontology import OntologySchema
from .terms import RDF_TYPE, Literal, Triple
from .turtle import read_triples, serialize_ntriples


class StoreFrozen(RuntimeError):
    pass


class TriplePattern(NamedTuple):
    """A pattern over (s, p, o); ``None`` is the wildcard."""

    s: object = None
    p: object = None
    o: object = None

    def matches(self, triple) -> bool:
        return all(want is None or want == got for want, got in zip(self, triple))


class StoreStats(NamedTuple):
    asserted: int
    inferred: int
    subjects: int
    predicates: int


class Store:
    """Holds a membership set plus one bucket per subject, predicate and object.

    Lookups pick the smallest bucket for the bound positions and filter it; this
    keeps bulk loading cheap (one append per index) at the price of a linear
    filter when two positions are bound.  Loading, entailment and subject-centred
    joins never bind the object alone, so the object index is built on first use.

    All writes (:meth:`insert`, :meth:`materialize`) happen before :meth:`freeze`;
    afterwards the store is read-only and may be shared between threads.
    """

    def __init__(self, triples: Iterable = ()):
        self._all: set = set()
        self._by_s: dict = {}
        self._by_p: dict = {}
        self._by_o: Optional[dict] = None
        self._inferred: set = set()
        self._by_sp: dict = {}
        self._frozen = False
        self.add_all(triples)

    @classmethod
    def load(cls, *paths) -> "Store":
        store = cls()
        with collector_paused():
            for path in paths:
                store.add_all(read_triples(path))
        return store

    # writing

    def insert(self, triple, inferred: bool = False) -> bool:
        if self._frozen:
            raise StoreFrozen("store is frozen; no writes after the load phase")
        if type(triple) is not Triple:
            triple = Triple(*triple)
        if triple in self._all:
            if not inferred and self._inferred:
                # an explicit assertion of an inferred triple promotes it
                self._inferred.discard(triple)
            return False
        self.add_all((triple,))
        if inferred:
            self._inferred.add(triple)
        return True

    def add_all(self, triples: Iterable) -> int:
        if self._frozen:
            raise StoreFrozen("store is frozen; no writes after the load phase")
        everything, by_s, by_p, by_o = self._all, self._by_s, self._by_p, self._by_o
        promote = self._inferred.discard if self._inferred else None
        self._by_sp.clear()
        before = len(everything)
        size = len(everything)
        for t in triples:
            if type(t) is not Triple:
                t = Triple(*t)
            everything.add(t)
            if len(everything) == size:
                if promote:
                    promote(t)
                continue
            size += 1
            s, p, o = t
            bucket = by_s.get(s)
            if bucket is None:
                by_s[s] = [t]
            else:
                bucket.append(t)
            bucket = by_p.get(p)
            if bucket is None:
                by_p[p] = [t]
            else:
                bucket.append(t)
            if by_o is not None:
                bucket = by_o.get(o)
                if bucket is None:
                    by_o[o] = [t]
                else:
                    bucket.append(t)
        return len(everything) - before

    def _objects(self) -> dict:
        by_o = self._by_o
        if by_o is None:
            by_o = {}
            for t in self._all:
                bucket = by_o.get(t[2])
                if bucket is None:
                    by_o[t[2]] = [t]
                else:
                    bucket.append(t)
            self._by_o = by_o
        return by_o

    def freeze(self) -> "Store":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    # reading

    def __len__(self):
        return len(self._all)

    def __contains__(self, triple):
        return tuple(triple) in self._all

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._all)

    def is_inferred(self, triple) -> bool:
        return tuple(triple) in self._inferred

    def _bucket(self, s, p, o):
        best = None
        for index, key in ((self._by_s, s), (self._by_p, p), (None, o)):
            if key is None:
                continue
            if index is None:
                index = self._objects()
            bucket = index.get(key)
            if bucket is None:
                return ()
            if best is None or len(bucket) < len(best):
                best = bucket
        return best

    def triples(self, s=None, p=None, o=None) -> Iterator[Triple]:
        """Unordered matches, filtered from the smallest relevant bucket."""
        bound = (s is not None) + (p is not None) + (o is not None)
        if bound == 3:
            t = tuple.__new__(Triple, (s, p, o))
            return iter((t,) if t in self._all else ())
        if bound == 0:
            return iter(self._all)
        bucket = self._bucket(s, p, o)
        if bound == 1:
            return iter(bucket)
        if s is None:
            return (t for t in bucket if t[1] == p and t[2] == o)
        if p is None:
            return (t for t in bucket if t[0] == s and t[2] == o)
        return iter(self._subject_map(s).get(p, ()))

    def _subject_map(self, s) -> dict:
        """Predicate -> triples for one subject, built on first use and dropped on writes."""
        grouped = self._by_sp.get(s)
        if grouped is None:
            grouped = {}
            for t in self._by_s.get(s, ()):
                bucket = grouped.get(t[1])
                if bucket is None:
                    grouped[t[1]] = [t]
                else:
                    bucket.append(t)
            self._by_sp[s] = grouped
        return grouped

    def match(self, pattern: Optional[TriplePattern] = None) -> list:
        """Matching triples in term order."""
        pattern = pattern or TriplePattern()
        return sorted(self.triples(*pattern), key=lambda t: t.sort_key)

    def count(self, s=None, p=None, o=None) -> int:
        """Number of matches; bucket sizes answer single-position patterns directly."""
        bound = (s is not None) + (p is not None) + (o is not None)
        if bound == 0:
            return len(self._all)
        if bound == 1:
            return len(self._bucket(s, p, o))
        return sum(1 for _ in self.triples(s, p, o))

    def subjects(self) -> Iterable:
        return self._by_s.keys()

    def predicates(self) -> Iterable:
        return self._by_p.keys()

    def stats(self) -> StoreStats:
        inferred = len(self._inferred)
        return StoreStats(len(self._all) - inferred, inferred, len(self._by_s), len(self._by_p))

    def dump(self, annotate: bool = False) -> str:
        """Deterministic N-Triples; ``annotate`` marks inferred triples with a comment."""
        if not annotate:
            return serialize_ntriples(self.triples())
        lines = []
        for t in sorted(self.triples(), key=lambda t: t.sort_key):
            lines.append(t.n3() + (" # inferred\n" if t in self._inferred else "\n"))
        return "".join(lines)

    # entailment

    def materialize(self, schema: OntologySchema) -> int:
        """Close the store under subproperty, subclass, domain and inverse rules.

        Returns the number of triples added; a second call returns 0.
        """
        if self._frozen:
            raise StoreFrozen("cannot materialize a frozen store")
        with collector_paused():
            return self._materialize(schema)

    def _materialize(self, schema: OntologySchema) -> int:
        supers_c = {c: schema.super_classes(c) for c, _ in schema.subclass_of}
        inverses = schema.inverse_pairs()
        # per predicate: every super-property and every class the subject gains,
        # both already closed, so only inverse-derived triples need another pass
        rules = {}
        for p in {p for p, _ in schema.subproperty_of} | set(schema.domains) | set(inverses):
            ups = schema.super_properties(p)
            types = set()
            for q in {p} | ups:
                if q in schema.domains:
                    d = schema.domains[q]
                    types |= {d} | supers_c.get(d, set())
            flips = set()
            for q in {p} | ups:
                flips |= inverses.get(q, set())
            rules[p] = (tuple(ups), tuple(types), tuple(flips))

        make = tuple.__new__

        def derive(triples) -> tuple:
            """One bulk step: closed consequences, plus inverse flips that need another step."""
            closed, flipped = [], []
            by_p: dict = {}
            for t in triples:
                by_p.setdefault(t[1], []).append(t)
            for p, bucket in by_p.items():
                if p == RDF_TYPE:
                    by_class: dict = {}
                    for t in bucket:
                        if t[2] in supers_c:
                            by_class.setdefault(t[2], []).append(t[0])
                    for c, subjects in by_class.items():
                        for d in supers_c[c]:
                            closed.extend([make(Triple, (x, RDF_TYPE, d)) for x in subjects])
                rule = rules.get(p)
                if rule is None:
                    continue
                ups, types, flips = rule
                for q in ups:
                    closed.extend([make(Triple, (t[0], q, t[2])) for t in bucket])
                for d in types:
                    closed.extend([make(Triple, (t[0], RDF_TYPE, d)) for t in bucket])
                for r in flips:
                    flipped.extend([make(Triple, (t[2], r, t[0])) for t in bucket if t[2].__class__ is not Literal])
            return closed, flipped

        seeds = []
        for p in rules:
            seeds.extend(self._by_p.get(p, ()))
        if supers_c:
            seeds.extend(t for t in self._by_p.get(RDF_TYPE, ()) if t[2] in supers_c)
        fresh = set()
        queue = seeds
        while queue:
            closed, flipped = derive(queue)
            fresh.update(closed)
            fresh -= self._all
            # flips of known triples are already covered; new ones take another step
            queue = [t for t in set(flipped) if t not in self._all and t not in fresh]
            fresh.update(queue)
        # derived triples are well formed by construction, so skip the constructor checks
        self.add_all(fresh)
        self._inferred |= fresh
        return len(fresh)
