#include "ivdl/common.hpp"

namespace ivdl {

void ObservedDataset::validate() const {
  const Eigen::Index n = y.size();
  if (n < 1) {
    throw DimensionError("dataset must hold at least one record");
  }
  if (x.rows() != n || a.size() != n || z.size() != n) {
    throw DimensionError("dataset columns have mismatched lengths");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((a[i] != 1 && a[i] != -1) || (z[i] != 1 && z[i] != -1)) {
      throw DomainError("treatment and instrument must be coded +1/-1 (row " +
                        std::to_string(i) + ")");
    }
  }
}

ObservedDataset ObservedDataset::subset(const std::vector<Eigen::Index>& rows) const {
  ObservedDataset out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.y.resize(m);
  out.x.resize(m, x.cols());
  out.a.resize(m);
  out.z.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index r = rows[static_cast<std::size_t>(k)];
    out.y[k] = y[r];
    out.x.row(k) = x.row(r);
    out.a[k] = a[r];
    out.z[k] = z[r];
  }
  return out;
}

}  // namespace ivdl
