#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "mara/dataset.hpp"
#include "mara/errors.hpp"

namespace mara {

namespace {

constexpr std::array<const char*, 118> kSymbols = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",  "S",  "Cl", "Ar",
    "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe",
    "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
    "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
    "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

// Standard atomic weights for the first 36 elements; heavier ones fall back to 2.5 Z.
constexpr std::array<double, 36> kMasses = {
    1.008,  4.0026, 6.94,   9.0122, 10.81,  12.011, 14.007, 15.999, 18.998, 20.180, 22.990, 24.305,
    26.982, 28.085, 30.974, 32.06,  35.45,  39.948, 39.098, 40.078, 44.956, 47.867, 50.942, 51.996,
    54.938, 55.845, 58.933, 58.693, 63.546, 65.38,  69.723, 72.630, 74.922, 78.971, 79.904, 83.798};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, std::size_t line, const char* what) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  if (!tok.empty() && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || !std::isfinite(v))
    throw ParseError(line, std::string("bad ") + what + " value '" + std::string(tok) + "'");
  return v;
}

/// key=value pairs with optional double-quoted values; bare keys get "".
std::vector<std::pair<std::string, std::string>> parse_comment(std::string_view s, std::size_t line) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::size_t i = 0;
  auto skip = [&] {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
  };
  skip();
  while (i < s.size()) {
    std::size_t k = i;
    while (k < s.size() && s[k] != '=' && s[k] != ' ' && s[k] != '\t' && s[k] != '\r') ++k;
    std::string key(s.substr(i, k - i));
    if (key.empty()) throw ParseError(line, "empty key in comment line");
    std::string value;
    i = k;
    if (i < s.size() && s[i] == '=') {
      ++i;
      if (i < s.size() && s[i] == '"') {
        const auto close = s.find('"', i + 1);
        if (close == std::string_view::npos) throw ParseError(line, "unterminated quote for key '" + key + "'");
        value = std::string(s.substr(i + 1, close - i - 1));
        i = close + 1;
      } else {
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        value = std::string(s.substr(i, j - i));
        i = j;
      }
    }
    kv.emplace_back(std::move(key), std::move(value));
    skip();
  }
  return kv;
}

struct Column {
  std::string name;
  char type;
  std::size_t width;
};

std::vector<Column> parse_properties(std::string_view desc, std::size_t line) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (true) {
    const auto j = desc.find(':', i);
    parts.push_back(desc.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i));
    if (j == std::string_view::npos) break;
    i = j + 1;
  }
  if (parts.size() % 3 != 0) throw ParseError(line, "Properties descriptor must be name:type:count triples");
  std::vector<Column> cols;
  for (std::size_t p = 0; p < parts.size(); p += 3) {
    const auto type = parts[p + 1];
    if (type.size() != 1 || std::string_view("SRIL").find(type[0]) == std::string_view::npos)
      throw ParseError(line, "unknown property type '" + std::string(type) + "'");
    std::size_t width = 0;
    auto [ptr, ec] = std::from_chars(parts[p + 2].data(), parts[p + 2].data() + parts[p + 2].size(), width);
    if (ec != std::errc() || ptr != parts[p + 2].data() + parts[p + 2].size() || width == 0)
      throw ParseError(line, "bad property width '" + std::string(parts[p + 2]) + "'");
    cols.push_back({std::string(parts[p]), type[0], width});
  }
  return cols;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool needs_quotes(const std::string& v) {
  return v.empty() || v.find_first_of(" \t=") != std::string::npos;
}

}  // namespace

std::string element_symbol(int z) {
  if (z < 1 || z > 118) throw InvalidArgument("atomic number out of range: " + std::to_string(z));
  return kSymbols[static_cast<std::size_t>(z - 1)];
}

int atomic_number(std::string_view symbol) {
  for (std::size_t i = 0; i < kSymbols.size(); ++i)
    if (symbol == kSymbols[i]) return static_cast<int>(i + 1);
  int z = 0;
  auto [p, ec] = std::from_chars(symbol.data(), symbol.data() + symbol.size(), z);
  if (ec == std::errc() && p == symbol.data() + symbol.size() && z >= 1 && z <= 118) return z;
  throw InvalidArgument("unknown element '" + std::string(symbol) + "'");
}

double atomic_mass(int z) {
  if (z < 1 || z > 118) throw InvalidArgument("atomic number out of range: " + std::to_string(z));
  return z <= 36 ? kMasses[static_cast<std::size_t>(z - 1)] : 2.5 * z;
}

std::vector<AtomicConfiguration> parse_extxyz(std::string_view text, bool require_energy) {
  std::vector<std::string_view> lines;
  for (std::size_t i = 0; i <= text.size();) {
    const auto j = text.find('\n', i);
    if (j == std::string_view::npos) {
      if (i < text.size()) lines.push_back(text.substr(i));
      break;
    }
    lines.push_back(text.substr(i, j - i));
    i = j + 1;
  }
  std::vector<AtomicConfiguration> frames;
  std::size_t ln = 0;
  while (ln < lines.size()) {
    if (trim(lines[ln]).empty()) {
      ++ln;
      continue;
    }
    const std::size_t count_line = ln + 1;
    const auto count_tok = trim(lines[ln]);
    std::size_t n = 0;
    auto [p, ec] = std::from_chars(count_tok.data(), count_tok.data() + count_tok.size(), n);
    if (ec != std::errc() || p != count_tok.data() + count_tok.size())
      throw ParseError(count_line, "expected an atom count, got '" + std::string(count_tok) + "'");
    if (ln + 1 >= lines.size()) throw ParseError(count_line + 1, "missing comment line");
    const std::size_t comment_line = ln + 2;
    auto kv = parse_comment(lines[ln + 1], comment_line);

    AtomicConfiguration cfg;
    std::vector<Column> cols{{"species", 'S', 1}, {"pos", 'R', 3}};
    for (auto& [k, v] : kv) {
      if (k == "Properties") {
        cols = parse_properties(v, comment_line);
      } else if (k == "energy") {
        cfg.energy = parse_double(v, comment_line, "energy");
      } else {
        cfg.info.emplace_back(k, v);
      }
    }
    if (require_energy && !cfg.energy) throw SchemaError("frame at line " + std::to_string(count_line) + " has no energy");
    std::size_t total = 0;
    long species_at = -1, pos_at = -1, forces_at = -1;
    for (const auto& c : cols) {
      if (c.name == "species") {
        if (c.type != 'S' || c.width != 1) throw ParseError(comment_line, "species must be S:1");
        species_at = static_cast<long>(total);
      } else if (c.name == "pos") {
        if (c.type != 'R' || c.width != 3) throw ParseError(comment_line, "pos must be R:3");
        pos_at = static_cast<long>(total);
      } else if (c.name == "forces" || c.name == "force") {
        if (c.type != 'R' || c.width != 3) throw ParseError(comment_line, "forces must be R:3");
        forces_at = static_cast<long>(total);
      }
      total += c.width;
    }
    if (species_at < 0 || pos_at < 0) throw ParseError(comment_line, "Properties must include species and pos");
    if (forces_at >= 0) cfg.forces.emplace();

    for (std::size_t a = 0; a < n; ++a) {
      const std::size_t at = ln + 2 + a;
      if (at >= lines.size())
        throw ParseError(at + 1, "expected " + std::to_string(n) + " atom lines, file ended after " + std::to_string(a));
      const auto toks = split_ws(lines[at]);
      if (toks.size() != total)
        throw ParseError(at + 1, "expected " + std::to_string(total) + " columns, got " + std::to_string(toks.size()));
      try {
        cfg.species.push_back(atomic_number(toks[static_cast<std::size_t>(species_at)]));
      } catch (const InvalidArgument& e) {
        throw ParseError(at + 1, e.what());
      }
      Vec3 x{};
      for (int c = 0; c < 3; ++c) x[c] = parse_double(toks[static_cast<std::size_t>(pos_at + c)], at + 1, "position");
      cfg.positions.push_back(x);
      if (forces_at >= 0) {
        Vec3 f{};
        for (int c = 0; c < 3; ++c) f[c] = parse_double(toks[static_cast<std::size_t>(forces_at + c)], at + 1, "force");
        cfg.forces->push_back(f);
      }
    }
    frames.push_back(std::move(cfg));
    ln += 2 + n;
  }
  return frames;
}

std::string write_extxyz(const std::vector<AtomicConfiguration>& frames) {
  std::string out;
  for (const auto& f : frames) {
    f.validate();
    out += std::to_string(f.size()) + "\n";
    out += "Properties=species:S:1:pos:R:3";
    if (f.forces) out += ":forces:R:3";
    if (f.energy) out += " energy=" + format_double(*f.energy);
    for (const auto& [k, v] : f.info) {
      if (k.empty() || k.find_first_of(" \t=\"\n") != std::string::npos)
        throw InvalidArgument("comment key '" + k + "' cannot be written");
      if (v.find_first_of("\"\n") != std::string::npos)
        throw InvalidArgument("comment value for '" + k + "' cannot be written");
      out += " " + k + "=" + (needs_quotes(v) ? "\"" + v + "\"" : v);
    }
    out += "\n";
    for (std::size_t a = 0; a < f.size(); ++a) {
      out += element_symbol(f.species[a]);
      for (double x : f.positions[a]) out += " " + format_double(x);
      if (f.forces)
        for (double x : (*f.forces)[a]) out += " " + format_double(x);
      out += "\n";
    }
  }
  return out;
}

Dataset read_extxyz_file(const std::string& path, bool require_energy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  Dataset d;
  d.samples = parse_extxyz(ss.str(), require_energy);
  d.splits.assign(d.samples.size(), Split::train);
  d.provenance = path;
  return d;
}

void write_extxyz_file(const std::string& path, const std::vector<AtomicConfiguration>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  out << write_extxyz(frames);
}

// ---- dataset bookkeeping ------------------------------------------------------

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

std::vector<const AtomicConfiguration*> Dataset::subset(Split s) const {
  std::vector<const AtomicConfiguration*> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (splits.at(i) == s) out.push_back(&samples[i]);
  return out;
}

std::vector<AtomicConfiguration> Dataset::copy_of(Split s) const {
  std::vector<AtomicConfiguration> out;
  for (const auto* c : subset(s)) out.push_back(*c);
  return out;
}

std::vector<int> Dataset::species() const {
  std::vector<int> z;
  for (const auto& c : samples) z.insert(z.end(), c.species.begin(), c.species.end());
  std::sort(z.begin(), z.end());
  z.erase(std::unique(z.begin(), z.end()), z.end());
  return z;
}

void assign_splits(Dataset& data, std::uint64_t seed, double train_fraction, double valid_fraction) {
  if (train_fraction <= 0 || valid_fraction < 0 || train_fraction + valid_fraction > 1.0)
    throw InvalidArgument("split fractions must be positive and sum to at most 1");
  const std::size_t n = data.samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_train = static_cast<std::size_t>(std::floor(train_fraction * double(n)));
  std::size_t n_valid = static_cast<std::size_t>(std::floor(valid_fraction * double(n)));
  if (n >= 2) {
    n_train = std::max<std::size_t>(n_train, 1);
    n_valid = std::max<std::size_t>(n_valid, 1);
    if (n_train + n_valid > n) n_train = n - n_valid;
  } else {
    n_train = n;
    n_valid = 0;
  }
  data.splits.assign(n, Split::test);
  for (std::size_t r = 0; r < n; ++r)
    data.splits[order[r]] = r < n_train ? Split::train : (r < n_train + n_valid ? Split::valid : Split::test);
}

}  // namespace mara
