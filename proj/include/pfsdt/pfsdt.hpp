// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "born_tests.hpp"
#include "detection.hpp"
#include "deviation.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "io.hpp"
#include "montecarlo.hpp"
#include "rng.hpp"
