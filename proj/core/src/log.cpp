// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "porlab/log.hpp"

#include <iostream>
#include <utility>

namespace porlab {
namespace {
WarningSink& sink() {
  static WarningSink s;
  return s;
}
}  // namespace

WarningSink set_warning_sink(WarningSink s) { return std::exchange(sink(), std::move(s)); }

void warn(const std::string& message) {
  if (sink()) {
    sink()(message);
  } else {
    std::cerr << "porlab: warning: " << message << '\n';
  }
}

}  // namespace porlab
