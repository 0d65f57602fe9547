#include "rsiam/memory_bank.hpp"

#include <string>

#include "rsiam/core_math.hpp"
#include "rsiam/errors.hpp"
#include "rsiam/kernels.hpp"

namespace rsiam {

MemoryBank::MemoryBank(std::size_t num_instances, std::size_t dim, double momentum)
    : m_(num_instances, dim), momentum_(momentum) {
    if (!(momentum >= 0.0 && momentum <= 1.0))
        throw InfeasibleConfigError("MemoryBank: momentum must lie in [0, 1]");
}

void MemoryBank::refresh(const RealMatrix& all_features) {
    if (!all_features.same_shape(m_))
        throw DimensionMismatchError("MemoryBank::refresh: expected " + std::to_string(m_.rows) +
                                     "x" + std::to_string(m_.cols));
    kernels::normalize_rows(all_features, m_, kNormEps);
}

void MemoryBank::momentum_update(std::size_t t, const RealVector& f) {
    if (t >= m_.rows)
        throw IndexOutOfRangeError("MemoryBank::momentum_update: index " + std::to_string(t));
    if (f.size() != m_.cols)
        throw DimensionMismatchError("MemoryBank::momentum_update: feature dim mismatch");
    if (momentum_ == 1.0) return;
    const RealVector fresh = l2_normalize(f);
    if (momentum_ == 0.0) {
        m_.set_row(t, fresh);
        return;
    }
    RealVector blend(m_.cols);
    for (std::size_t k = 0; k < m_.cols; ++k)
        blend[k] = momentum_ * m_(t, k) + (1.0 - momentum_) * fresh[k];
    m_.set_row(t, l2_normalize(blend));
}

RealVector MemoryBank::similarities_to(const RealVector& f) const {
    if (m_.rows == 0) throw EmptyBankError("MemoryBank::similarities_to: empty bank");
    const RealVector z = l2_normalize(f);
    RealMatrix zrow(1, m_.cols);
    zrow.set_row(0, z);
    RealMatrix s;
    kernels::cross_similarities(zrow, m_, s);
    return s.row_copy(0);
}

} // namespace rsiam
