#pragma once

#include "weylcalc/engine.hpp"
#include "weylcalc/selfcheck.hpp"
