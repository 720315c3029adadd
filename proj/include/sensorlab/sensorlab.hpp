#pragma once

#include "sensorlab/awb.hpp"
#include "sensorlab/dataset.hpp"
#include "sensorlab/error.hpp"
#include "sensorlab/metrics.hpp"
#include "sensorlab/netcore.hpp"
#include "sensorlab/neuron_search.hpp"
#include "sensorlab/parallel.hpp"
#include "sensorlab/pipeline.hpp"
#include "sensorlab/report.hpp"
#include "sensorlab/synthetic.hpp"
#include "sensorlab/trainers.hpp"
