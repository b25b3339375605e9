#pragma once

#include "adaptqn/data_io.hpp"
#include "adaptqn/directions.hpp"
#include "adaptqn/driver.hpp"
#include "adaptqn/errors.hpp"
#include "adaptqn/oracles.hpp"
#include "adaptqn/sc_core.hpp"
#include "adaptqn/steps.hpp"
#include "adaptqn/stochastic.hpp"
#include "adaptqn/trace_csv.hpp"
