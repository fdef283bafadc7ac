#pragma once

#include "core.hpp"
#include "parallel.hpp"
#include "sampling.hpp"
#include "field.hpp"
#include "dynamics.hpp"
#include "diagnostics.hpp"
#include "simulation.hpp"
#include "verify.hpp"
#include "config.hpp"
#include "io.hpp"
#include "commands.hpp"
