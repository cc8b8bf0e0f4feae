#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <set>
#include <sstream>

#include "molvae/chem/graph.hpp"
#include "molvae/chem/smiles.hpp"
#include "molvae/chem/substructure.hpp"
#include "molvae/chem/vocabulary.hpp"
#include "support/corpus.hpp"
#include "support/smiles_oracle.hpp"

using namespace molvae;
using chem::BondOrder;
using chem::MolecularGraph;
using chem::Representation;

namespace {
MolecularGraph parse(const std::string& s, int rep = 2) {
  return chem::parse_smiles(s, chem::representation_from_int(rep));
}
}  // namespace

TEST_CASE("single atom parses to one carbon") {
  auto g = parse("C", 1);
  CHECK(g.num_atoms() == 1);
  CHECK(g.bonds().empty());
  CHECK(g.atom(0).label.element == "C");
  CHECK(g.atom(0).valence == 4);
  CHECK(chem::write_canonical_smiles(g) == "C");
}

TEST_CASE("C=O parses with resolved valences") {
  auto g = parse("C=O");
  REQUIRE(g.num_atoms() == 2);
  CHECK(g.atom(0).label.to_string() == "C4(0)");
  CHECK(g.atom(1).label.to_string() == "O2(0)");
  REQUIRE(g.bonds().size() == 1);
  CHECK(g.bonds()[0].order == BondOrder::kDouble);
  CHECK(g.atom(0).implicit_h == 2);
  CHECK(g.atom(1).implicit_h == 0);
}

TEST_CASE("malformed inputs report position and kind") {
  CHECK_THROWS_WITH_AS(parse("C("), doctest::Contains("unmatched branch"), chem::ParseError);
  CHECK_THROWS_WITH_AS(parse("C1CC"), doctest::Contains("unmatched ring"), chem::ParseError);
  CHECK_THROWS_WITH_AS(parse("[Xq]"), doctest::Contains("unknown element"), chem::ParseError);
  CHECK_THROWS_WITH_AS(parse("C(=O)(=O)=O"), doctest::Contains("valence overflow"),
                       chem::ParseError);
  CHECK_THROWS_AS(parse(""), chem::ParseError);
  CHECK_THROWS_AS(parse("CC.CC"), chem::ParseError);
  CHECK_THROWS_AS(parse("C=#C"), chem::ParseError);
  CHECK_THROWS_AS(parse("C=="), chem::ParseError);
}

TEST_CASE("bracket atoms carry hydrogens, charges and chiral tags") {
  auto g = parse("[NH4+]");
  CHECK(g.atom(0).valence == 4);
  CHECK(g.atom(0).label.formal_charge == 1);
  CHECK(chem::write_canonical_smiles(g) == "[NH4+]");

  auto h = parse("C[C@H](N)O", 3);
  CHECK(h.atom(1).label.chiral_tag == "@");
  auto canon = chem::write_canonical_smiles(h);
  CHECK(canon.find("@") != std::string::npos);
  // representation 2 drops the tag
  auto h2 = parse("C[C@H](N)O", 2);
  CHECK(chem::write_canonical_smiles(h2).find("@") == std::string::npos);
}

TEST_CASE("kekulization assigns alternating bonds") {
  auto benzene = parse("c1ccccc1");
  int doubles = 0;
  for (const auto& b : benzene.bonds()) doubles += b.order == BondOrder::kDouble;
  CHECK(doubles == 3);
  CHECK(benzene.valence_consistent());
  CHECK(chem::write_canonical_smiles(benzene) ==
        chem::write_canonical_smiles(parse("C1=CC=CC=C1")));

  auto pyridine = parse("c1ccncc1");
  CHECK(chem::write_canonical_smiles(pyridine) ==
        chem::write_canonical_smiles(parse("C1=CC=NC=C1")));

  auto pyrrole = parse("c1cc[nH]c1");
  int pyrrole_doubles = 0;
  for (const auto& b : pyrrole.bonds()) pyrrole_doubles += b.order == BondOrder::kDouble;
  CHECK(pyrrole_doubles == 2);
  for (int i = 0; i < pyrrole.num_atoms(); ++i)
    if (pyrrole.atom(i).label.element == "N") CHECK(pyrrole.atom(i).valence == 3);

  auto furan = parse("c1ccoc1");
  CHECK(furan.valence_consistent());

  // odd ring of pi-needing atoms has no alternating assignment
  CHECK_THROWS_WITH_AS(parse("c1cccc1"), doctest::Contains("kekulize"), chem::ParseError);
}

TEST_CASE("canonical string is stable across input spellings") {
  CHECK(chem::write_canonical_smiles(parse("OCC")) ==
        chem::write_canonical_smiles(parse("CCO")));
  CHECK(chem::write_canonical_smiles(parse("C(F)(F)F")) ==
        chem::write_canonical_smiles(parse("FC(F)F")));
  CHECK(chem::write_canonical_smiles(parse("C1CC1")) ==
        chem::write_canonical_smiles(parse("C2CC2")));
}

TEST_CASE("in-order writer agrees with the independent reference writer") {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    auto g = testing::random_molecule(rng, 8, Representation::kValenceCharge);
    CHECK(chem::write_smiles_in_order(g) == testing::oracle_write_in_order(g));
  }
}

TEST_CASE("canonical writer equals brute-force minimum over orderings") {
  Rng rng(7);
  int checked = 0;
  while (checked < 120) {
    auto g = testing::random_molecule(rng, 6, Representation::kValenceCharge);
    CHECK(chem::write_canonical_smiles(g) == testing::oracle_canonical(g));
    ++checked;
  }
  // a few known molecules, including rings and charges
  for (const char* s : {"C(C)O", "C=O", "C1CC1", "CC(=O)O", "C#N", "[NH4+]",
                        "N1C=CC=C1", "FC(F)(F)C(=O)O"}) {
    auto g = parse(s);
    CHECK(chem::write_canonical_smiles(g) == testing::oracle_canonical(g));
  }
}

TEST_CASE("canonical writer is invariant under relabeling and idempotent") {
  Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    auto g = testing::random_molecule(rng, 9, Representation::kValenceCharge);
    auto canon = chem::write_canonical_smiles(g);
    std::vector<int> perm(g.num_atoms());
    std::iota(perm.begin(), perm.end(), 0);
    for (int p = 0; p < 25; ++p) {
      rng.shuffle(perm);
      CHECK(chem::write_canonical_smiles(testing::permute_atoms(g, perm)) == canon);
    }
    // round trip: parse(write) reproduces the same canonical string
    auto reparsed = parse(canon);
    CHECK(chem::write_canonical_smiles(reparsed) == canon);
    CHECK(chem::write_smiles_in_order(reparsed) == canon);
  }
}

TEST_CASE("valence histogram counts atoms per valence") {
  auto acetic = parse("CC(=O)O");
  auto h = chem::valence_histogram(acetic);
  CHECK(h.at_valence(4) == 2);
  CHECK(h.at_valence(2) == 2);
  CHECK(h.total() == 4);

  auto hcn = parse("C#N");
  auto h2 = chem::valence_histogram(hcn);
  CHECK(h2.at_valence(4) == 1);
  CHECK(h2.at_valence(3) == 1);

  auto empty = chem::valence_histogram(MolecularGraph{});
  CHECK(empty.total() == 0);
}

TEST_CASE("histogram total always equals atom count") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    auto g = testing::random_molecule(rng, 9, Representation::kValenceCharge);
    CHECK(chem::valence_histogram(g).total() == g.num_atoms());
  }
}

TEST_CASE("hydrogen completion fills residual valence") {
  auto lone = parse("C");
  CHECK(lone.atom(0).implicit_h == 4);

  auto formaldehyde = parse("C=O");
  CHECK(formaldehyde.atom(0).implicit_h == 2);

  auto water_like = parse("COC");  // O with two single bonds
  CHECK(water_like.atom(1).implicit_h == 0);

  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    auto g = testing::random_molecule(rng, 9, Representation::kValenceCharge);
    chem::complete_hydrogens(g);
    for (const auto& a : g.atoms()) CHECK(a.implicit_h >= 0);
  }
}

TEST_CASE("connectivity helpers") {
  CHECK(chem::is_connected(parse("CC")));
  CHECK(chem::is_connected(parse("C1CC1")));

  MolecularGraph two;
  two.set_representation(Representation::kValenceCharge);
  chem::AtomLabel c;
  c.rep = Representation::kValenceCharge;
  c.element = "C";
  c.total_valence = 4;
  two.add_atom({c, 4, 0});
  two.add_atom({c, 4, 0});
  CHECK_FALSE(chem::is_connected(two));
  auto largest = chem::largest_component(two);
  CHECK(largest.num_atoms() == 1);

  CHECK_THROWS_AS(two.add_bond(0, 0, BondOrder::kSingle), std::invalid_argument);
  two.add_bond(0, 1, BondOrder::kSingle);
  CHECK_THROWS_AS(two.add_bond(1, 0, BondOrder::kSingle), std::invalid_argument);
}

TEST_CASE("substructure sampling") {
  auto single = parse("C");
  Rng rng(3);
  auto keys = chem::sample_substructures(single, 5, 3, rng);
  REQUIRE(keys.size() == 5);
  for (const auto& k : keys) CHECK(k == keys[0]);

  auto path = parse("CCC");
  Rng rng2(4);
  auto keys2 = chem::sample_substructures(path, 50, 1, rng2);
  for (const auto& k : keys2) CHECK(k == "CC");

  Rng a(77), b(77);
  auto g = parse("CC(=O)NC");
  CHECK(chem::sample_substructures(g, 10, 4, a) == chem::sample_substructures(g, 10, 4, b));
}

TEST_CASE("isomorphic fragments share keys") {
  Rng rng(31);
  auto g = parse("CC(=O)NC");
  std::vector<int> perm(g.num_atoms());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  auto pg = testing::permute_atoms(g, perm);
  // full-graph keys: walk long enough to cover everything
  Rng r1(1), r2(2);
  auto k1 = chem::sample_substructures(g, 30, 50, r1);
  auto k2 = chem::sample_substructures(pg, 30, 50, r2);
  std::set<std::string> s1(k1.begin(), k1.end()), s2(k2.begin(), k2.end());
  CHECK(s1.count(chem::write_canonical_smiles(g)) +
            s1.count(*s2.begin()) >=
        0);  // smoke: both sets built
  // the full-molecule fragment key must appear in both sets
  bool shared = false;
  for (const auto& k : s1) shared |= s2.count(k) > 0;
  CHECK(shared);
}

TEST_CASE("vocabulary built from a toy corpus") {
  std::istringstream corpus("C\nCC\n");
  chem::CorpusStats stats;
  auto v = chem::build_vocabulary(corpus, Representation::kElement, &stats);
  CHECK(stats.parsed == 2);
  REQUIRE(v.num_labels() == 1);
  CHECK(v.labels[0].element == "C");
  REQUIRE(v.num_bond_types() == 1);
  CHECK(v.bond_types[0] == BondOrder::kSingle);
  CHECK(v.nu == 4);
  REQUIRE(v.histograms.entries.size() == 2);
  CHECK(v.histograms.entries.at({0, 0, 0, 1}) == 1);
  CHECK(v.histograms.entries.at({0, 0, 0, 2}) == 1);

  std::istringstream empty("");
  CHECK_THROWS_AS(chem::build_vocabulary(empty, Representation::kElement), std::runtime_error);
}

TEST_CASE("vocabulary counts parse failures and continues") {
  std::istringstream corpus("CC\nnot_a_smiles((\nCCO\n# comment\n");
  chem::CorpusStats stats;
  auto v = chem::build_vocabulary(corpus, Representation::kValenceCharge, &stats);
  CHECK(stats.parsed == 2);
  CHECK(stats.skipped == 1);
  REQUIRE(stats.errors.size() == 1);
  CHECK(stats.errors[0].first == 2);
  CHECK(v.num_labels() == 2);  // C4(0) and O2(0)
}

TEST_CASE("vocabulary save and load round trip") {
  std::istringstream corpus(testing::random_corpus(42, 60, 9));
  auto v = chem::build_vocabulary(corpus, Representation::kValenceCharge);
  std::ostringstream os;
  v.save(os);
  std::istringstream is(os.str());
  auto w = chem::Vocabulary::load(is);
  CHECK(w.representation == v.representation);
  CHECK(w.nu == v.nu);
  CHECK(w.labels.size() == v.labels.size());
  CHECK(w.histograms.entries == v.histograms.entries);
  CHECK(w.hash() == v.hash());
  std::ostringstream os2;
  w.save(os2);
  CHECK(os2.str() == os.str());
}

TEST_CASE("rep-1 valence table picks the most frequent valence") {
  // N appears twice with valence 3, once with valence 5 (nitro-like)
  std::istringstream corpus("NC\nNCC\nCN(=O)=O\n");
  auto v = chem::build_vocabulary(corpus, Representation::kElement);
  CHECK(v.rep1_valence.at("N") == 3);
  CHECK(v.rep1_valence.at("C") == 4);
  // histograms resolved through the table: nitro N counted as valence 3
  chem::MolecularGraph nitro = parse("CN(=O)=O", 1);
  auto h = v.molecule_histogram(nitro);
  CHECK(h.at_valence(3) == 1);
}

TEST_CASE("histogram distribution sampling is deterministic") {
  std::istringstream corpus(testing::random_corpus(1, 40, 9));
  auto v = chem::build_vocabulary(corpus, Representation::kValenceCharge);
  Rng a(5), b(5);
  for (int i = 0; i < 20; ++i) {
    auto ha = v.histograms.sample(a);
    auto hb = v.histograms.sample(b);
    CHECK(ha.counts == hb.counts);
    CHECK(v.histograms.entries.count(ha.counts) == 1);
  }
  Rng c(6);
  for (int i = 0; i < 20; ++i) {
    int m = v.histograms.sample_size(c);
    CHECK(v.histograms.size_marginal.count(m) == 1);
  }
}

TEST_CASE("dataset loader canonicalizes and records failures") {
  std::istringstream is("OCC\t0.5\nbroken((\nCCO\t0.25\n");
  chem::CorpusStats stats;
  auto entries = chem::load_dataset(is, Representation::kValenceCharge, &stats);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].smiles == entries[1].smiles);
  CHECK(entries[0].properties == std::vector<double>{0.5});
  CHECK(stats.skipped == 1);
}
