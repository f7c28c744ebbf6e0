#pragma once

#include "protovae/numgrad/kernels.hpp"

namespace protovae::numgrad::detail {

extern const KernelTable kScalarTable;

#if PROTOVAE_HAVE_AVX2
extern const KernelTable kAvx2Table;
#endif

}  // namespace protovae::numgrad::detail
