#include "molvae/chem/vocabulary.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "molvae/chem/smiles.hpp"

namespace molvae::chem {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void HistogramDistribution::add(const ValenceHistogram& h, int nu) {
  std::vector<int> counts = h.counts;
  counts.resize(nu, 0);
  entries[counts] += 1;
  size_marginal[h.total()] += 1;
  total += 1;
}

std::optional<int> Vocabulary::label_index(const AtomLabel& label) const {
  auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it != labels.end() && *it == label) return static_cast<int>(it - labels.begin());
  return std::nullopt;
}

int Vocabulary::label_valence(const AtomLabel& label) const {
  if (representation != Representation::kElement) return label.total_valence;
  auto it = rep1_valence.find(label.element);
  if (it == rep1_valence.end())
    throw std::out_of_range("no valence table entry for element " + label.element);
  return it->second;
}

std::vector<int> Vocabulary::label_indices(const MolecularGraph& g) const {
  std::vector<int> out;
  out.reserve(g.num_atoms());
  for (const auto& a : g.atoms()) {
    auto idx = label_index(a.label);
    if (!idx) throw std::out_of_range("label not in vocabulary: " + a.label.to_string());
    out.push_back(*idx);
  }
  return out;
}

ValenceHistogram Vocabulary::molecule_histogram(const MolecularGraph& g) const {
  ValenceHistogram h;
  h.counts.assign(nu, 0);
  for (const auto& a : g.atoms()) h.add_valence(label_valence(a.label));
  return h;
}

std::uint64_t Vocabulary::hash() const {
  std::ostringstream os;
  save(os);
  return fnv1a(os.str());
}

void Vocabulary::save(std::ostream& os) const {
  os << "molvae-vocab 1\n";
  os << "representation " << static_cast<int>(representation) << "\n";
  os << "nu " << nu << "\n";
  os << "bonds";
  for (BondOrder b : bond_types) os << ' ' << bond_weight(b);
  os << "\n";
  os << "table";
  for (const auto& [el, v] : rep1_valence) os << ' ' << el << ':' << v;
  os << "\n";
  os << "labels " << labels.size() << "\n";
  for (const auto& l : labels) os << l.to_string() << "\n";
  os << "histograms " << histograms.entries.size() << "\n";
  for (const auto& [counts, n] : histograms.entries) {
    for (std::size_t i = 0; i < counts.size(); ++i) os << (i ? "," : "") << counts[i];
    os << ' ' << n << "\n";
  }
}

Vocabulary Vocabulary::load(std::istream& is) {
  Vocabulary v;
  std::string word;
  int version;
  is >> word >> version;
  if (word != "molvae-vocab" || version != 1)
    throw std::runtime_error("unrecognized vocabulary file");
  int rep;
  is >> word >> rep;
  v.representation = representation_from_int(rep);
  is >> word >> v.nu;
  is >> word;  // "bonds"
  std::string line;
  std::getline(is, line);
  {
    std::istringstream ls(line);
    int w;
    while (ls >> w) v.bond_types.push_back(bond_order_from_weight(w));
  }
  is >> word;  // "table"
  std::getline(is, line);
  {
    std::istringstream ls(line);
    std::string item;
    while (ls >> item) {
      auto colon = item.find(':');
      v.rep1_valence[item.substr(0, colon)] = std::stoi(item.substr(colon + 1));
    }
  }
  std::size_t n;
  is >> word >> n;
  std::getline(is, line);
  for (std::size_t i = 0; i < n; ++i) {
    std::getline(is, line);
    v.labels.push_back(AtomLabel::from_string(line, v.representation));
  }
  is >> word >> n;
  std::getline(is, line);
  for (std::size_t i = 0; i < n; ++i) {
    std::getline(is, line);
    std::istringstream ls(line);
    std::string counts_text;
    long mult;
    ls >> counts_text >> mult;
    std::vector<int> counts;
    std::istringstream cs(counts_text);
    std::string tok;
    while (std::getline(cs, tok, ',')) counts.push_back(std::stoi(tok));
    v.histograms.entries[counts] = mult;
    int m = 0;
    for (int c : counts) m += c;
    v.histograms.size_marginal[m] += mult;
    v.histograms.total += mult;
  }
  return v;
}

namespace {

struct ParsedLine {
  std::string smiles;
  std::vector<double> properties;
};

std::optional<ParsedLine> split_line(const std::string& line) {
  if (line.empty() || line[0] == '#') return std::nullopt;
  ParsedLine out;
  std::istringstream ls(line);
  if (!(ls >> out.smiles)) return std::nullopt;
  double p;
  while (ls >> p) out.properties.push_back(p);
  return out;
}

}  // namespace

Vocabulary build_vocabulary(std::istream& corpus, Representation rep, CorpusStats* stats) {
  Vocabulary v;
  v.representation = rep;
  std::set<AtomLabel> label_set;
  std::set<BondOrder> bond_set;
  std::map<std::string, std::map<int, long>> element_valences;
  std::vector<ValenceHistogram> histograms;        // parse-time valences
  std::vector<std::vector<std::string>> elements;  // per molecule, rep 1 only

  CorpusStats local;
  std::string line;
  long line_no = 0;
  while (std::getline(corpus, line)) {
    ++line_no;
    auto parsed = split_line(line);
    if (!parsed) continue;
    ++local.lines;
    try {
      MolecularGraph g = parse_smiles(parsed->smiles, rep);
      ++local.parsed;
      for (const auto& a : g.atoms()) {
        label_set.insert(a.label);
        element_valences[a.label.element][a.valence] += 1;
      }
      for (const auto& b : g.bonds()) bond_set.insert(b.order);
      if (rep == Representation::kElement) {
        std::vector<std::string> els;
        for (const auto& a : g.atoms()) els.push_back(a.label.element);
        elements.push_back(std::move(els));
      } else {
        ValenceHistogram h;
        for (const auto& a : g.atoms()) h.add_valence(a.valence);
        v.nu = std::max(v.nu, static_cast<int>(h.counts.size()));
        histograms.push_back(std::move(h));
      }
    } catch (const std::exception& e) {
      ++local.skipped;
      local.errors.emplace_back(line_no, e.what());
    }
  }
  if (local.parsed == 0) throw std::runtime_error("corpus contains no parseable molecules");

  v.labels.assign(label_set.begin(), label_set.end());
  std::sort(v.labels.begin(), v.labels.end());
  v.bond_types.assign(bond_set.begin(), bond_set.end());
  std::sort(v.bond_types.begin(), v.bond_types.end(),
            [](BondOrder a, BondOrder b) { return bond_weight(a) < bond_weight(b); });
  for (const auto& [el, counts] : element_valences) {
    int best_v = 0;
    long best_n = -1;
    for (const auto& [valence, n] : counts)
      if (n > best_n || (n == best_n && valence < best_v)) {
        best_v = valence;
        best_n = n;
      }
    v.rep1_valence[el] = best_v;
  }

  if (rep == Representation::kElement) {
    // Representation 1 cannot resolve parse-time valences at decode time, so
    // histograms follow the element table instead.
    for (const auto& [el, valence] : v.rep1_valence) v.nu = std::max(v.nu, valence);
    for (const auto& els : elements) {
      ValenceHistogram h;
      for (const auto& el : els) h.add_valence(v.rep1_valence.at(el));
      v.histograms.add(h, v.nu);
    }
  } else {
    for (const auto& h : histograms) v.histograms.add(h, v.nu);
  }

  if (stats) *stats = local;
  return v;
}

std::vector<DatasetEntry> load_dataset(std::istream& is, Representation rep,
                                       CorpusStats* stats) {
  std::vector<DatasetEntry> out;
  CorpusStats local;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto parsed = split_line(line);
    if (!parsed) continue;
    ++local.lines;
    try {
      MolecularGraph g = parse_smiles(parsed->smiles, rep);
      std::string canon = write_canonical_smiles(g);
      MolecularGraph canonical_graph = parse_smiles(canon, rep);
      ++local.parsed;
      out.push_back({std::move(canon), std::move(canonical_graph),
                     std::move(parsed->properties)});
    } catch (const std::exception& e) {
      ++local.skipped;
      local.errors.emplace_back(line_no, e.what());
    }
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace molvae::chem
