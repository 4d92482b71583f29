#pragma once

#include "msibm/baseline.hpp"
#include "msibm/config.hpp"
#include "msibm/eval.hpp"
#include "msibm/image.hpp"
#include "msibm/image_codec.hpp"
#include "msibm/matcher.hpp"
#include "msibm/parallel.hpp"
#include "msibm/pyramid.hpp"
#include "msibm/zncc.hpp"

namespace msibm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace msibm
