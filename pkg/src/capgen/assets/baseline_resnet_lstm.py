import torch
import torch.nn as nn


def supported_hyperparameters():
    return {'lr', 'momentum'}


class Net(nn.Module):
    def __init__(self, in_shape, out_shape, prm, device):
        super().__init__()
        self.device = device
        self.vocab_size = out_shape[0]
        self.hidden_size = 640
        channels = in_shape[1]
        self.encoder = nn.Sequential(
            nn.Conv2d(channels, 32, kernel_size=3, stride=2, padding=1),
            nn.BatchNorm2d(32),
            nn.ReLU(inplace=True),
            nn.Conv2d(32, 64, kernel_size=3, stride=2, padding=1),
            nn.BatchNorm2d(64),
            nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(1),
        )
        self.encoder_proj = nn.Linear(64, self.hidden_size)
        self.embed = nn.Embedding(self.vocab_size, self.hidden_size, padding_idx=0)
        self.decoder = nn.LSTM(self.hidden_size, self.hidden_size, batch_first=True)
        self.dropout = nn.Dropout(0.1)
        self.head = nn.Linear(self.hidden_size, self.vocab_size)
        self.to(device)

    def train_setup(self, prm):
        self.criterion = nn.CrossEntropyLoss(ignore_index=0, label_smoothing=0.1)
        self.optimizer = torch.optim.SGD(
            self.parameters(), lr=prm['lr'], momentum=prm['momentum']
        )

    def learn(self, train_data):
        self.train()
        losses = []
        for images, captions in train_data:
            images = images.to(self.device)
            captions = captions.to(self.device)
            logits, _hidden = self.forward((images, captions))
            targets = captions[:, 1:]
            loss = self.criterion(
                logits.reshape(-1, self.vocab_size), targets.reshape(-1)
            )
            self.optimizer.zero_grad()
            loss.backward()
            self.optimizer.step()
            losses.append(float(loss.detach()))
        return losses

    def forward(self, x):
        images, captions = x
        features = self.encoder(images).flatten(1)
        memory = self.encoder_proj(features).unsqueeze(1)
        inputs = captions[:, :-1]
        tokens = self.dropout(self.embed(inputs))
        h0 = memory.transpose(0, 1).contiguous()
        c0 = torch.zeros_like(h0)
        out, hidden = self.decoder(tokens, (h0, c0))
        logits = self.head(out)
        assert logits.shape == (captions.shape[0], captions.shape[1] - 1, self.vocab_size)
        return logits, hidden
