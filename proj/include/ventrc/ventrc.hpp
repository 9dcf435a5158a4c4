#pragma once

#include "ventrc/benchmark.hpp"
#include "ventrc/config.hpp"
#include "ventrc/control_rt.hpp"
#include "ventrc/errors.hpp"
#include "ventrc/harness.hpp"
#include "ventrc/io.hpp"
#include "ventrc/lti.hpp"
#include "ventrc/pipeline.hpp"
#include "ventrc/plant.hpp"
#include "ventrc/polynomial.hpp"
#include "ventrc/rc_design.hpp"
#include "ventrc/sysid.hpp"
#include "ventrc/svg.hpp"
