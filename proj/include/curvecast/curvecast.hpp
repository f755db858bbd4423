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

#include "curvecast/bands.hpp"
#include "curvecast/blup.hpp"
#include "curvecast/error.hpp"
#include "curvecast/estimation.hpp"
#include "curvecast/harness.hpp"
#include "curvecast/linalg.hpp"
#include "curvecast/model_io.hpp"
#include "curvecast/normal.hpp"
#include "curvecast/panel.hpp"
#include "curvecast/random.hpp"
#include "curvecast/spline.hpp"
#include "curvecast/synth.hpp"
