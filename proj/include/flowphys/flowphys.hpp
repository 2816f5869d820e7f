#ifndef FLOWPHYS_FLOWPHYS_HPP_
#define FLOWPHYS_FLOWPHYS_HPP_

#include "flowphys/butterworth.hpp"
#include "flowphys/classifiers.hpp"
#include "flowphys/clean.hpp"
#include "flowphys/common.hpp"
#include "flowphys/config.hpp"
#include "flowphys/features.hpp"
#include "flowphys/ingest.hpp"
#include "flowphys/model.hpp"
#include "flowphys/pipeline.hpp"
#include "flowphys/special_functions.hpp"
#include "flowphys/spectral.hpp"
#include "flowphys/stats.hpp"
#include "flowphys/synth.hpp"
#include "flowphys/window.hpp"

#endif // FLOWPHYS_FLOWPHYS_HPP_
