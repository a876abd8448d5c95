/*
 * Copyright (C) 2026 The seitphr Authors
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
 */
#ifndef SEITPHR_SEITPHR_HPP
#define SEITPHR_SEITPHR_HPP

/// @file
/// @brief Umbrella header of the library.

#include "seitphr/config.hpp"
#include "seitphr/errors.hpp"
#include "seitphr/model.hpp"
#include "seitphr/mpc.hpp"
#include "seitphr/nlp.hpp"
#include "seitphr/ocp.hpp"
#include "seitphr/output.hpp"
#include "seitphr/parameters.hpp"
#include "seitphr/qp.hpp"
#include "seitphr/scenarios.hpp"
#include "seitphr/simulator.hpp"

#endif  // SEITPHR_SEITPHR_HPP
