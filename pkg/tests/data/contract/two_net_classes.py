import torch
import torch.nn as nn


def supported_hyperparameters():
    return {'lr', 'momentum'}


class Net(nn.Module):
    def __init__(self, in_shape, out_shape, prm, device):
        super().__init__()
        self.embed = nn.Embedding(out_shape[0], 32, padding_idx=0)
        self.encoder = nn.Conv2d(in_shape[1], 32, kernel_size=3)
        self.decoder = nn.LSTM(32, 32, batch_first=True)
        self.head = nn.Linear(32, out_shape[0])
        self.device = device

    def train_setup(self, prm):
        self.criterion = nn.CrossEntropyLoss(ignore_index=0, label_smoothing=0.1)
        self.optimizer = torch.optim.SGD(self.parameters(), lr=prm['lr'], momentum=prm['momentum'])

    def learn(self, train_data):
        return []

    def forward(self, x):
        images, captions = x
        feats = self.encoder(images).mean(dim=(2, 3)).unsqueeze(1)
        out, hidden = self.decoder(self.embed(captions[:, :-1]))
        logits = self.head(out + feats)
        return logits, hidden


class Net(nn.Module):
    pass
