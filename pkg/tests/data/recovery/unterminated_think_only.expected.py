import torch
import torch.nn as nn


def supported_hyperparameters():
    return {'lr', 'momentum'}
