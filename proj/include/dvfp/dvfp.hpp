#ifndef DVFP_DVFP_HPP
#define DVFP_DVFP_HPP

#include "dvfp/config.hpp"
#include "dvfp/csv.hpp"
#include "dvfp/error.hpp"
#include "dvfp/experiments.hpp"
#include "dvfp/kummer.hpp"
#include "dvfp/metrics.hpp"
#include "dvfp/model.hpp"
#include "dvfp/rates.hpp"
#include "dvfp/rng.hpp"
#include "dvfp/simulator.hpp"
#include "dvfp/stationary.hpp"
#include "dvfp/trace.hpp"
#include "dvfp/verify.hpp"

#endif
