#pragma once

#include <complex>

namespace gspwl {

using Complex = std::complex<double>;

}  // namespace gspwl
