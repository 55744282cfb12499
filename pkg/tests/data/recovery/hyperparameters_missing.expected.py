import torch
import torch.nn as nn


def supported_hyperparameters():
    return {'lr', 'momentum'}


class Net(nn.Module):
    def __init__(self, in_shape, out_shape, prm, device):
        super().__init__()
        self.proj = nn.Linear(in_shape[1], out_shape[0])
        self.device = device

    def train_setup(self, prm):
        self.criterion = nn.CrossEntropyLoss(ignore_index=0, label_smoothing=0.1)
        self.optimizer = torch.optim.SGD(self.parameters(), lr=prm['lr'], momentum=prm['momentum'])

    def learn(self, train_data):
        return []

    def forward(self, x):
        images, captions = x
        logits = self.proj(images).unsqueeze(1)
        return logits, None