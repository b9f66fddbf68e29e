import torch
import torch.nn as nn


def supported_hyperparameters():
    return {'lr', 'momentum'}


class Net(nn.Module):
    def __init__(self, in_shape, out_shape, prm):
        super().__init__()
        self.device = 'cpu'
        self.vocab_size = out_shape[0]
        self.hidden = 640
        self.encoder = nn.Sequential(
            nn.Conv2d(in_shape[1], 32, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(1),
        )
        self.project = nn.Linear(32, self.hidden)
        self.embed = nn.Embedding(self.vocab_size, self.hidden)
        self.rnn = nn.LSTM(self.hidden, self.hidden, batch_first=True)
        self.dropout = nn.Dropout(0.1)
        self.fc = nn.Linear(self.hidden, self.vocab_size)

    def train_setup(self, prm):
        self.to(self.device)
        self.criterion = nn.CrossEntropyLoss(ignore_index=0, label_smoothing=0.1)
        self.optimizer = torch.optim.AdamW(self.parameters(), lr=prm['lr'])

    def learn(self, train_data):
        self.train()
        for images, captions in train_data:
            images, captions = images.to(self.device), captions.to(self.device)
            logits, _ = self.forward(images, captions)
            targets = captions[:, 1:]
            loss = self.criterion(logits.reshape(-1, self.vocab_size), targets.reshape(-1))
            self.optimizer.zero_grad()
            loss.backward()
            self.optimizer.step()

    def forward(self, images, captions=None, hidden_state=None):
        feats = self.project(self.encoder(images).flatten(1)).unsqueeze(1)
        inputs = captions[:, :-1]
        x = self.dropout(self.embed(inputs) + feats)
        out, hidden_state = self.rnn(x, hidden_state)
        logits = self.fc(out)
        assert logits.shape == (images.size(0), captions.size(1) - 1, self.vocab_size)
        return logits, hidden_state
