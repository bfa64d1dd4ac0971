#include "qemc/common.hpp"

#ifndef QEMC_VERSION
#define QEMC_VERSION "unknown"
#endif

namespace qemc {

std::string_view code_version() { return QEMC_VERSION; }

}  // namespace qemc
