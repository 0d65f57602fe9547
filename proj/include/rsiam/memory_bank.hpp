#pragma once

#include "rsiam/types.hpp"

namespace rsiam {

/// Per-instance embedding store: row t permanently belongs to instance t.
/// Every row is unit-norm. Reads may be concurrent; updates are single-writer.
class MemoryBank {
  public:
    MemoryBank(std::size_t num_instances, std::size_t dim, double momentum);

    /// Replaces every row with the L2-normalized fresh feature. Idempotent.
    void refresh(const RealMatrix& all_features);

    /// Row t <- normalize(momentum * M_t + (1 - momentum) * normalize(f)).
    /// The momentum = 0 and momentum = 1 limits are exact: 0 stores
    /// normalize(f) directly, 1 leaves the row bitwise untouched.
    void momentum_update(std::size_t t, const RealVector& f);

    /// Entry t = cosine(f, M_t); rows are unit-norm so this is a dot product
    /// with the normalized query.
    RealVector similarities_to(const RealVector& f) const;

    const RealMatrix& matrix() const { return m_; }
    std::size_t size() const { return m_.rows; }
    std::size_t dim() const { return m_.cols; }
    double momentum() const { return momentum_; }

  private:
    RealMatrix m_;
    double momentum_;
};

} // namespace rsiam
