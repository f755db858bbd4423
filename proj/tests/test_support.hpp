/*
 * Copyright 2026 The curvecast Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#pragma once

#include <gtest/gtest.h>

#include "curvecast/error.hpp"

/// Runs f and checks that it throws curvecast::Error of the given kind.
template <class F>
void expect_error(F&& f, curvecast::ErrorKind kind) {
  try {
    f();
    ADD_FAILURE() << "expected error " << curvecast::to_string(kind);
  } catch (const curvecast::Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}
