#include "phlin/blocks.hpp"

#include <numeric>

namespace phlin {

Proj parse_proj(const std::string& name) {
  if (name == "s") return Proj::s;
  if (name == "c") return Proj::c;
  if (name == "u") return Proj::u;
  if (name == "cs") return Proj::cs;
  if (name == "cu") return Proj::cu;
  if (name == "su") return Proj::su;
  if (name == "all") return Proj::all;
  throw ConfigError("unknown projection name '" + name + "'");
}

std::string proj_name(Proj p) {
  switch (p) {
    case Proj::s: return "s";
    case Proj::c: return "c";
    case Proj::u: return "u";
    case Proj::cs: return "cs";
    case Proj::cu: return "cu";
    case Proj::su: return "su";
    case Proj::all: return "all";
  }
  return "?";
}

int Layout::ns() const { return std::accumulate(stable.begin(), stable.end(), 0); }
int Layout::nu() const { return std::accumulate(unstable.begin(), unstable.end(), 0); }

int Layout::block_offset(int i) const {
  const int k = static_cast<int>(stable.size());
  if (i < 0 || i >= num_blocks()) throw ConfigError("block index out of range");
  if (i < k) {
    int off = 0;
    for (int j = 0; j < i; ++j) off += stable[j];
    return off;
  }
  return u0() + unstable_offset_in_u(i - k);
}

int Layout::block_size(int i) const {
  const int k = static_cast<int>(stable.size());
  if (i < 0 || i >= num_blocks()) throw ConfigError("block index out of range");
  return i < k ? stable[i] : unstable[i - k];
}

int Layout::unstable_offset_in_u(int j) const {
  int off = 0;
  for (int i = 0; i < j; ++i) off += unstable[i];
  return off;
}

std::vector<int> Layout::indices(Proj p) const {
  std::vector<int> idx;
  auto add = [&](int from, int n) {
    for (int i = 0; i < n; ++i) idx.push_back(from + i);
  };
  const bool s = p == Proj::s || p == Proj::cs || p == Proj::su || p == Proj::all;
  const bool c = p == Proj::c || p == Proj::cs || p == Proj::cu || p == Proj::all;
  const bool u = p == Proj::u || p == Proj::cu || p == Proj::su || p == Proj::all;
  if (s) add(s0(), ns());
  if (c) add(c0(), nc());
  if (u) add(u0(), nu());
  return idx;
}

Vec project(const Layout& L, const Vec& x, Proj p) {
  if (x.size() != L.dim()) throw ConfigError("dimension mismatch in projection");
  const auto idx = L.indices(p);
  Vec out(static_cast<Eigen::Index>(idx.size()));
  for (size_t i = 0; i < idx.size(); ++i) out(i) = x(idx[i]);
  return out;
}

Vec embed(const Layout& L, const Vec& comp, Proj p) {
  const auto idx = L.indices(p);
  if (comp.size() != static_cast<Eigen::Index>(idx.size()))
    throw ConfigError("dimension mismatch in embedding");
  Vec x = Vec::Zero(L.dim());
  for (size_t i = 0; i < idx.size(); ++i) x(idx[i]) = comp(i);
  return x;
}

void assign(const Layout& L, Vec& x, Proj p, const Vec& comp) {
  const auto idx = L.indices(p);
  if (comp.size() != static_cast<Eigen::Index>(idx.size()))
    throw ConfigError("dimension mismatch in assignment");
  for (size_t i = 0; i < idx.size(); ++i) x(idx[i]) = comp(i);
}

Mat sub_block(const Layout& L, const Mat& M, Proj rows, Proj cols) {
  const auto r = L.indices(rows);
  const auto c = L.indices(cols);
  Mat out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
  for (size_t i = 0; i < r.size(); ++i)
    for (size_t j = 0; j < c.size(); ++j) out(i, j) = M(r[i], c[j]);
  return out;
}

BlockVector::BlockVector(Layout L, Vec x) : L_(std::move(L)), x_(std::move(x)) {
  if (x_.size() != L_.dim()) throw ConfigError("dimension mismatch for BlockVector");
}

Vec BlockVector::block(int i) const {
  return x_.segment(L_.block_offset(i), L_.block_size(i));
}

Vec split(const BlockVector& x, const std::string& which) {
  if (which.size() > 1 && (which[0] == 'b' || which[0] == 'i')) {
    // per-block access "i<k>" with 1-based block index as in X_1..X_p
    const int i = std::stoi(which.substr(1)) - 1;
    return x.block(i);
  }
  return project(x.layout(), x.full(), parse_proj(which));
}

}  // namespace phlin
