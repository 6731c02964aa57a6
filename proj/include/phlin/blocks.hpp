#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace phlin {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Bad input, unknown names, inadmissible parameters.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Solver divergence, non-convergence, singular data.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Proj { s, c, u, cs, cu, su, all };

Proj parse_proj(const std::string& name);
std::string proj_name(Proj p);

// Coordinates are ordered (stable blocks, center, unstable blocks).
struct Layout {
  std::vector<int> stable;
  int center = 0;
  std::vector<int> unstable;

  int ns() const;
  int nc() const { return center; }
  int nu() const;
  int dim() const { return ns() + nc() + nu(); }
  int s0() const { return 0; }
  int c0() const { return ns(); }
  int u0() const { return ns() + nc(); }
  int num_blocks() const { return static_cast<int>(stable.size() + unstable.size()); }
  // Offset and size of block i, stable blocks first then unstable blocks.
  int block_offset(int i) const;
  int block_size(int i) const;
  // Offset of unstable block j inside X_u.
  int unstable_offset_in_u(int j) const;

  std::vector<int> indices(Proj p) const;
  bool operator==(const Layout&) const = default;
};

Vec project(const Layout& L, const Vec& x, Proj p);
Vec embed(const Layout& L, const Vec& comp, Proj p);
// Overwrite the p-component of x.
void assign(const Layout& L, Vec& x, Proj p, const Vec& comp);
Mat sub_block(const Layout& L, const Mat& M, Proj rows, Proj cols);

class BlockVector {
 public:
  BlockVector(Layout L, Vec x);

  const Layout& layout() const { return L_; }
  const Vec& full() const { return x_; }
  Vec s() const { return project(L_, x_, Proj::s); }
  Vec c() const { return project(L_, x_, Proj::c); }
  Vec u() const { return project(L_, x_, Proj::u); }
  Vec cs() const { return project(L_, x_, Proj::cs); }
  Vec cu() const { return project(L_, x_, Proj::cu); }
  Vec su() const { return project(L_, x_, Proj::su); }
  Vec block(int i) const;

 private:
  Layout L_;
  Vec x_;
};

Vec split(const BlockVector& x, const std::string& which);

}  // namespace phlin
