import torch
import torch.nn as nn


def supported_hyperparameters():
    return {'lr', 'momentum'}


class BasicBlock(nn.Module):
    def __init__(self, in_ch, out_ch, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.relu = nn.ReLU(inplace=True)
        self.shortcut = nn.Sequential()
        if stride != 1 or in_ch != out_ch:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )

    def forward(self, x):
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + self.shortcut(x))


class Net(nn.Module):
    def __init__(self, in_shape, out_shape, prm, device):
        super().__init__()
        self.device = device
        self.vocab_size = int(out_shape[0])
        self.hidden_size = 640
        channels = int(in_shape[1])
        self.encoder = nn.Sequential(
            nn.Conv2d(channels, 32, 7, stride=2, padding=3, bias=False),
            nn.BatchNorm2d(32),
            nn.ReLU(inplace=True),
            BasicBlock(32, 64, stride=2),
            BasicBlock(64, 128, stride=2),
            nn.AdaptiveAvgPool2d((1, 1)),
        )
        self.project = nn.Linear(128, self.hidden_size)
        self.embedding = nn.Embedding(self.vocab_size, self.hidden_size, padding_idx=0)
        self.lstm = nn.LSTM(self.hidden_size, self.hidden_size, batch_first=True)
        self.dropout = nn.Dropout(0.1)
        self.fc = nn.Linear(self.hidden_size, self.vocab_size)

    def train_setup(self, prm):
        self.to(self.device)
        self.criterion = nn.CrossEntropyLoss(ignore_index=0, label_smoothing=0.1)
        self.optimizer = torch.optim.AdamW(self.parameters(), lr=prm['lr'])

    def learn(self, train_data):
        self.train()
        for images, captions in train_data:
            images = images.to(self.device)
            captions = captions.to(self.device)
            inputs = captions[:, :-1]
            targets = captions[:, 1:]
            self.optimizer.zero_grad()
            logits, _ = self.forward(images, inputs)
            loss = self.criterion(logits.reshape(-1, self.vocab_size), targets.reshape(-1))
            loss.backward()
            nn.utils.clip_grad_norm_(self.parameters(), 3.0)
            self.optimizer.step()

    def forward(self, images, captions=None, hidden_state=None):
        feats = self.encoder(images).flatten(1)
        memory = self.project(feats).unsqueeze(1)  # [B, 1, H]
        if captions is None:
            captions = torch.zeros(images.size(0), 1, dtype=torch.long, device=images.device)
        emb = self.dropout(self.embedding(captions))
        if hidden_state is None:
            h0 = memory.transpose(0, 1).contiguous()
            hidden_state = (h0, torch.zeros_like(h0))
        out, hidden_state = self.lstm(emb, hidden_state)
        logits = self.fc(out)
        assert logits.shape[:2] == captions.shape[:2]
        return logits, hidden_state
