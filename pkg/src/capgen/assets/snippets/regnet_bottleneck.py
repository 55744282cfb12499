import torch.nn as nn


class RegNetBottleneck(nn.Module):
    def __init__(self, w_in, w_out, stride, group_width):
        super().__init__()
        groups = w_out // group_width
        self.a = nn.Conv2d(w_in, w_out, 1, bias=False)
        self.a_bn = nn.BatchNorm2d(w_out)
        self.b = nn.Conv2d(w_out, w_out, 3, stride=stride, padding=1, groups=groups, bias=False)
        self.b_bn = nn.BatchNorm2d(w_out)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x):
        x = self.relu(self.a_bn(self.a(x)))
        return self.relu(self.b_bn(self.b(x)))
